/**
 * DOM wiring. All labeling logic lives in the controllers; this file
 * renders their state and forwards events. Served posts arrive with the
 * server's token list, which is rendered verbatim (never re-tokenized).
 */

import { ApiClient, ApiError, SchemaVersionError } from "./api.js";
import { CurationController } from "./curation.js";
import {
  EMOTIONS,
  Emotion,
  EmotionController,
  TriageController,
  TriggerController,
  leaseBatch,
} from "./views.js";

type View = "dashboard" | "triage" | "emotion" | "trigger" | "curation";

const app = document.getElementById("app") as HTMLElement;
const banner = document.getElementById("banner") as HTMLElement;
const nav = document.getElementById("nav") as HTMLElement;

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(
  params.get("server") ?? "http://127.0.0.1:8400",
  params.get("annotator") ?? "anon",
  params.get("token"),
);

let readOnly = false;
let triage: TriageController | null = null;
let emotion: EmotionController | null = null;
let trigger: TriggerController | null = null;
let curation: CurationController | null = null;
let activeView: View = "dashboard";

function showError(err: unknown): void {
  if (err instanceof SchemaVersionError) {
    readOnly = true;
    banner.textContent = `${err.message} — labeling disabled`;
    banner.className = "banner error";
  } else if (err instanceof ApiError && err.status === 410) {
    banner.textContent = "lease expired — press r to lease a fresh batch";
    banner.className = "banner warn";
  } else {
    banner.textContent = String(err);
    banner.className = "banner warn";
  }
}

function clearBanner(): void {
  banner.textContent = "";
  banner.className = "banner";
}

function el(tag: string, cls: string, text = ""): HTMLElement {
  const node = document.createElement(tag);
  node.className = cls;
  if (text) node.textContent = text;
  return node;
}

async function renderDashboard(): Promise<void> {
  app.replaceChildren(el("h2", "", "bootstrap rounds"));
  try {
    const rounds = await api.rounds();
    if (!rounds.length) app.append(el("p", "dim", "no rounds started yet"));
    for (const r of rounds) {
      const row = el("div", "round-row");
      row.append(
        el("span", "pill", `round ${r.index}`),
        el("span", `pill ${r.status}`, r.status),
        el("span", "", `harvested ${r.harvested}`),
        el("span", "", `labeled ${r.labeled}/${r.sample_size}`),
        el("span", "", r.test_f1 === null ? "" : `test F1 ${r.test_f1.toFixed(3)}`),
      );
      app.append(row);
    }
    if (!readOnly) {
      const btn = el("button", "", "advance round") as HTMLButtonElement;
      btn.onclick = async () => {
        try {
          await api.advanceRound();
          clearBanner();
          await renderDashboard();
        } catch (err) {
          showError(err);
        }
      };
      app.append(btn);
    }
  } catch (err) {
    showError(err);
  }
}

function progressLine(labeled: number, total: number): HTMLElement {
  return el("p", "dim", `${labeled} labeled of ${total} in batch`);
}

async function renderTriage(): Promise<void> {
  app.replaceChildren(el("h2", "", "relevance triage  [y]es / [n]o / [s]kip / [u]ndo"));
  if (readOnly) return;
  if (!triage || triage.session.isSubmitted) {
    try {
      const session = await leaseBatch(api, "relevance", window.localStorage);
      if (!session) {
        app.append(el("p", "dim", "nothing pending — all posts labeled or leased"));
        triage = null;
        return;
      }
      triage = new TriageController(session, api);
    } catch (err) {
      showError(err);
      return;
    }
  }
  const sess = triage.session;
  if (sess.done) {
    app.append(el("p", "", `batch submitted (${sess.labeledCount()} labels) — press r for the next one`));
    return;
  }
  const post = sess.current();
  if (!post) return;
  app.append(progressLine(sess.labeledCount(), sess.posts.length));
  app.append(el("div", "post-text", post.text));
  app.append(el("p", "dim", `${post.id} · ${post.date}`));
}

async function renderEmotion(): Promise<void> {
  app.replaceChildren(
    el("h2", "", "emotions  [1-6] toggle / [0] neutral / [enter] confirm"),
  );
  if (readOnly) return;
  if (!emotion || emotion.session.isSubmitted) {
    try {
      const session = await leaseBatch(api, "emotion", window.localStorage);
      if (!session) {
        app.append(el("p", "dim", "nothing pending"));
        emotion = null;
        return;
      }
      emotion = new EmotionController(session, api);
    } catch (err) {
      showError(err);
      return;
    }
  }
  const sess = emotion.session;
  if (sess.done) {
    app.append(el("p", "", "batch submitted — press r for the next one"));
    return;
  }
  const post = sess.current();
  if (!post) return;
  app.append(progressLine(sess.labeledCount(), sess.posts.length));
  app.append(el("div", "post-text", post.text));
  const picked = new Set(emotion.selected());
  const grid = el("div", "emotions");
  EMOTIONS.forEach((emo, i) => {
    const cell = el("label", picked.has(emo) ? "emotion on" : "emotion");
    cell.textContent = `${i + 1} ${emo}`;
    cell.onclick = () => {
      emotion!.toggle(emo);
      void renderEmotion();
    };
    grid.append(cell);
  });
  app.append(grid);
}

async function renderTrigger(): Promise<void> {
  app.replaceChildren(
    el("h2", "", "trigger spans — drag across tokens, [1-6] pick emotion, [enter] confirm"),
  );
  if (readOnly) return;
  if (!trigger || trigger.session.isSubmitted) {
    try {
      const session = await leaseBatch(api, "trigger", window.localStorage);
      if (!session) {
        app.append(el("p", "dim", "nothing pending"));
        trigger = null;
        return;
      }
      trigger = new TriggerController(session, api);
    } catch (err) {
      showError(err);
      return;
    }
  }
  const sess = trigger.session;
  if (sess.done) {
    app.append(el("p", "", "batch submitted — press r for the next one"));
    return;
  }
  const post = sess.current();
  if (!post) return;
  app.append(progressLine(sess.labeledCount(), sess.posts.length));
  app.append(el("p", "dim", `active emotion: ${trigger.activeEmotion}`));
  const line = el("div", "tokens");
  const span = trigger.selection.spanFor(trigger.activeEmotion);
  post.tokens.forEach((tok, i) => {
    const inSpan = span !== undefined && i >= span.start && i < span.end;
    const chip = el("span", inSpan ? "token on" : "token", tok.surface);
    chip.onmousedown = (e) => {
      e.preventDefault();
      trigger!.tokenDown(i);
    };
    chip.onmouseenter = () => trigger!.tokenEnter(i);
    chip.onmouseup = () => {
      trigger!.tokenUp(i);
      void renderTrigger();
    };
    line.append(chip);
  });
  app.append(line);
}

async function renderCuration(): Promise<void> {
  const emo = params.get("emotion") ?? "anger";
  app.replaceChildren(el("h2", "", `topic curation — ${emo}`));
  if (!curation || curation.emotion !== emo) curation = new CurationController(api, emo);
  try {
    const topics = await curation.load();
    for (const t of topics) {
      const row = el("div", "topic-row");
      row.append(
        el("span", "pill", `k=${t.topic}`),
        el("span", `pill ${t.status}`, t.status),
        el("span", "", t.top_words.join(" ")),
        el("span", "dim", `${t.mention_count} mentions · ${t.top_dates.join(" ")}`),
      );
      if (!readOnly) {
        const btn = el("button", "", t.status === "kept" ? "discard" : "keep") as HTMLButtonElement;
        btn.onclick = async () => {
          try {
            await curation!.toggle(t.topic);
            await renderCuration();
          } catch (err) {
            showError(err);
          }
        };
        row.append(btn);
      }
      app.append(row);
    }
  } catch (err) {
    showError(err);
  }
}

const renderers: Record<View, () => Promise<void>> = {
  dashboard: renderDashboard,
  triage: renderTriage,
  emotion: renderEmotion,
  trigger: renderTrigger,
  curation: renderCuration,
};

function switchView(view: View): void {
  activeView = view;
  for (const a of nav.querySelectorAll("a")) {
    a.className = a.dataset.view === view ? "on" : "";
  }
  void renderers[view]();
}

document.addEventListener("keydown", (e) => {
  if (readOnly) return;
  void (async () => {
    try {
      if (activeView === "triage" && triage && !triage.session.done) {
        if (await triage.handleKey(e.key)) await renderTriage();
        return;
      }
      if (activeView === "emotion" && emotion && !emotion.session.done) {
        const idx = "123456".indexOf(e.key);
        if (idx >= 0) emotion.toggle(EMOTIONS[idx] as Emotion);
        else if (e.key === "0") await emotion.neutral();
        else if (e.key === "Enter") await emotion.confirm();
        else return;
        await renderEmotion();
        return;
      }
      if (activeView === "trigger" && trigger && !trigger.session.done) {
        const idx = "123456".indexOf(e.key);
        if (idx >= 0) trigger.setEmotion(EMOTIONS[idx] as Emotion);
        else if (e.key === "Enter") await trigger.confirm();
        else return;
        await renderTrigger();
        return;
      }
      if (e.key === "r") await renderers[activeView]();
    } catch (err) {
      showError(err);
    }
  })();
});

for (const a of nav.querySelectorAll("a")) {
  a.addEventListener("click", (e) => {
    e.preventDefault();
    switchView((a as HTMLElement).dataset.view as View);
  });
}

switchView("dashboard");
