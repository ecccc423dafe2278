import datetime

import pytest

from affectline.corpus import DailyPartition
from affectline.emoclass import EMOTIONS
from affectline.trends import (
    IntensitySeries,
    emotion_intensity,
    moving_average,
    read_series_csv,
    topic_intensity,
    write_series_csv,
)

D1 = datetime.date(2020, 3, 1)
D2 = datetime.date(2020, 3, 2)


def part(date, ids):
    return DailyPartition(date=date, post_ids=tuple(ids))


def probs(**kw):
    base = {emo: 0.0 for emo in EMOTIONS}
    base.update(kw)
    return base


class TestTopicIntensity:
    def test_none_related(self):
        parts = [part(D1, [f"p{i}" for i in range(10)])]
        related = {f"p{i}": False for i in range(10)}
        assert topic_intensity(parts, related)[D1] == 0.0

    def test_three_of_ten(self):
        parts = [part(D1, [f"p{i}" for i in range(10)])]
        related = {f"p{i}": i < 3 for i in range(10)}
        assert topic_intensity(parts, related)[D1] == pytest.approx(0.3, abs=1e-12)

    def test_missing_prediction_names_post(self):
        parts = [part(D1, ["p0", "p1"])]
        with pytest.raises(KeyError, match="p1"):
            topic_intensity(parts, {"p0": True})


class TestEmotionIntensity:
    def test_all_non_related_gives_zero(self):
        parts = [part(D1, ["a", "b"])]
        series = emotion_intensity(parts, {"a": False, "b": False}, {})
        for emo in EMOTIONS:
            assert series[emo][D1] == 0.0

    def test_eq_mean_with_zero_rule(self):
        # one related post with p(anger)=0.8 plus one non-related: 0.8 / 2
        parts = [part(D1, ["a", "b"])]
        series = emotion_intensity(parts, {"a": True, "b": False}, {"a": probs(anger=0.8)})
        assert series["anger"][D1] == pytest.approx(0.4, abs=1e-12)

    def test_single_related_full_probability(self):
        parts = [part(D1, ["a", "b", "c", "d"])]
        related = {"a": True, "b": False, "c": False, "d": False}
        series = emotion_intensity(parts, related, {"a": probs(fear=1.0)})
        assert series["fear"][D1] == pytest.approx(0.25, abs=1e-12)

    def test_emotion_bounded_by_topic_intensity(self):
        parts = [part(D1, ["a", "b", "c"]), part(D2, ["d", "e"])]
        related = {"a": True, "b": True, "c": False, "d": False, "e": True}
        p = {"a": probs(anger=0.9, fear=0.5), "b": probs(anger=0.2), "e": probs(sadness=0.7)}
        topic = topic_intensity(parts, related)
        emo = emotion_intensity(parts, related, p)
        for day in (D1, D2):
            for e in EMOTIONS:
                assert 0.0 <= emo[e][day] <= topic[day] + 1e-12

    def test_adding_non_related_post_dilutes(self):
        before = emotion_intensity([part(D1, ["a"])], {"a": True}, {"a": probs(anger=0.8)})
        after = emotion_intensity([part(D1, ["a", "x"])], {"a": True, "x": False},
                                  {"a": probs(anger=0.8)})
        assert after["anger"][D1] < before["anger"][D1]

    def test_missing_probability_for_related_post(self):
        with pytest.raises(KeyError, match="related post 'a'"):
            emotion_intensity([part(D1, ["a"])], {"a": True}, {})


class TestSeriesCsv:
    def test_roundtrip_lossless_at_ten_decimals(self, tmp_path):
        series = IntensitySeries(subject="anger",
                                 points={D1: 0.1234567891, D2: 0.0000000001})
        path = tmp_path / "series.csv"
        write_series_csv(path, [series])
        back = read_series_csv(path)["anger"]
        assert back.points == series.points

    def test_header_and_gaps(self, tmp_path):
        series = IntensitySeries(subject="topic", points={D1: 0.5})  # no D2 row
        path = tmp_path / "topic.csv"
        write_series_csv(path, [series])
        lines = path.read_text().splitlines()
        assert lines[0] == "date,subject,score"
        assert lines[1] == "2020-03-01,topic,0.5000000000"
        assert len(lines) == 2

    def test_empty_day_partitions_are_absent(self):
        parts = [part(D1, ["a"]), part(D2, [])]
        series = topic_intensity(parts, {"a": True})
        assert D2 not in series.points


def test_moving_average_trailing_window():
    series = IntensitySeries(subject="anger", points={
        datetime.date(2020, 3, 1): 0.2,
        datetime.date(2020, 3, 2): 0.4,
        datetime.date(2020, 3, 3): 0.6,
    })
    smooth = moving_average(series, window=2)
    assert smooth.points[datetime.date(2020, 3, 1)] == pytest.approx(0.2)
    assert smooth.points[datetime.date(2020, 3, 2)] == pytest.approx(0.3)
    assert smooth.points[datetime.date(2020, 3, 3)] == pytest.approx(0.5)
