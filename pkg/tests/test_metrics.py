"""Metrics tests: tally oracle, accuracy arithmetic, episode-rate scanner."""

import itertools
import random

import pytest

from drowsewatch.fusion import FusionConfig
from drowsewatch.ingest import FrameRecord
from drowsewatch.metrics import (
    ConfusionMatrix,
    MetricsError,
    RunEvaluation,
    accuracy,
    confusion,
    evaluate_run,
)
from drowsewatch.store import Event


def labeled(t_ms, label):
    return FrameRecord(t_ms=t_ms, probability=0.5, label=label)


def alarm_at(t_ms):
    return Event(kind="alarm", t_ms=t_ms, session_id="s", wall_time="w")


class TestConfusion:
    def test_perfect_predictions(self):
        truth = ["sleepy", "awake"] * 5
        m = confusion(truth, truth)
        assert (m.fp, m.fn) == (0, 0)
        assert accuracy(m) == 1.0

    def test_all_inverted(self):
        truth = ["sleepy", "awake"] * 5
        preds = ["awake", "sleepy"] * 5
        m = confusion(preds, truth)
        assert (m.tp, m.tn) == (0, 0)
        assert accuracy(m) == 0.0

    def test_random_sequences_match_brute_force_tally(self):
        rng = random.Random(41)
        for _ in range(50):
            n = rng.randint(1, 300)
            truth = [rng.choice(["sleepy", "awake"]) for _ in range(n)]
            preds = [rng.choice(["sleepy", "awake"]) for _ in range(n)]
            m = confusion(preds, truth)
            # independent tally via pair counting
            pairs = list(zip(preds, truth))
            assert m.tp == pairs.count(("sleepy", "sleepy"))
            assert m.fp == pairs.count(("sleepy", "awake"))
            assert m.fn == pairs.count(("awake", "sleepy"))
            assert m.tn == pairs.count(("awake", "awake"))
            assert m.total == n

    def test_length_mismatch(self):
        with pytest.raises(MetricsError, match="length mismatch"):
            confusion(["sleepy"], ["sleepy", "awake"])

    def test_unknown_label(self):
        with pytest.raises(MetricsError, match="labels must be"):
            confusion(["dozy"], ["sleepy"])

    def test_permutation_consistency(self):
        rng = random.Random(42)
        truth = [rng.choice(["sleepy", "awake"]) for _ in range(100)]
        preds = [rng.choice(["sleepy", "awake"]) for _ in range(100)]
        base = confusion(preds, truth)
        order = list(range(100))
        rng.shuffle(order)
        shuffled = confusion([preds[i] for i in order], [truth[i] for i in order])
        assert shuffled == base


class TestAccuracy:
    def test_reported_validation_cells(self):
        # 2x2 cells: actual awake -> (498 pred awake, 15 pred sleepy),
        # actual sleepy -> (18 pred awake, 481 pred sleepy)
        m = ConfusionMatrix(tp=481, fp=15, fn=18, tn=498)
        assert m.total == 1012
        assert accuracy(m) == pytest.approx(979 / 1012)
        assert accuracy(m) == pytest.approx(0.9674, abs=5e-5)

    def test_two_by_two_trivial(self):
        assert accuracy(ConfusionMatrix(tp=1, fp=0, fn=0, tn=1)) == 1.0

    def test_random_matrices_match_arithmetic(self):
        rng = random.Random(43)
        for _ in range(100):
            tp, fp, fn, tn = (rng.randint(0, 500) for _ in range(4))
            if tp + fp + fn + tn == 0:
                continue
            m = ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)
            assert accuracy(m) == (tp + tn) / (tp + fp + fn + tn)

    def test_error_transpose_invariance(self):
        m = ConfusionMatrix(tp=10, fp=7, fn=3, tn=20)
        swapped = ConfusionMatrix(tp=10, fp=3, fn=7, tn=20)
        assert accuracy(m) == accuracy(swapped)

    def test_empty_matrix_rejected(self):
        with pytest.raises(MetricsError, match="empty"):
            accuracy(ConfusionMatrix(0, 0, 0, 0))

    def test_bounds(self):
        rng = random.Random(44)
        for _ in range(50):
            m = ConfusionMatrix(*(rng.randint(0, 9) for _ in range(4)))
            if m.total:
                assert 0.0 <= accuracy(m) <= 1.0


def build_stream(segments):
    """segments: list of (n_frames, label). Frames are 10 ms apart."""
    records = []
    t = 0
    for n, label in segments:
        for _ in range(n):
            records.append(labeled(t, label))
            t += 10
    return records


class TestEvaluateRun:
    CFG = FusionConfig(alarm_frame_threshold=5)

    def test_one_episode_one_alarm_inside(self):
        stream = build_stream([(10, "awake"), (8, "sleepy"), (10, "awake")])
        episode_start = stream[10].t_ms
        result = evaluate_run([alarm_at(episode_start + 40)], stream, self.CFG)
        assert result == RunEvaluation(true_alarm_rate=1.0, false_positive_rate=0.0,
                                       episodes=1, alarms=1)

    def test_no_alarms_two_episodes(self):
        stream = build_stream([(8, "sleepy"), (5, "awake"), (8, "sleepy")])
        result = evaluate_run([], stream, self.CFG)
        assert result.true_alarm_rate == 0.0
        assert result.false_positive_rate == 0.0
        assert result.episodes == 2

    def test_short_runs_are_not_episodes(self):
        stream = build_stream([(4, "sleepy"), (5, "awake"), (4, "sleepy")])
        result = evaluate_run([], stream, self.CFG)
        assert result.episodes == 0

    def test_alarm_on_awake_frame_is_false_positive(self):
        stream = build_stream([(10, "awake"), (8, "sleepy")])
        result = evaluate_run([alarm_at(stream[3].t_ms)], stream, self.CFG)
        assert result.false_positive_rate == 1.0
        assert result.true_alarm_rate == 0.0

    def test_event_order_invariance(self):
        stream = build_stream([(8, "sleepy"), (10, "awake"), (8, "sleepy")])
        alarms = [alarm_at(stream[2].t_ms), alarm_at(stream[20].t_ms)]
        a = evaluate_run(alarms, stream, self.CFG)
        b = evaluate_run(list(reversed(alarms)), stream, self.CFG)
        assert a == b

    def test_unlabeled_stream_rejected(self):
        stream = [FrameRecord(t_ms=0, probability=0.5)]
        with pytest.raises(MetricsError, match="no ground-truth labels"):
            evaluate_run([], stream, self.CFG)

    def test_random_corpus_matches_groupby_scanner(self):
        # independent scanner built on itertools.groupby over labels
        rng = random.Random(45)
        for _ in range(20):
            segments = [(rng.randint(1, 12), rng.choice(["sleepy", "awake"]))
                        for _ in range(30)]
            stream = build_stream(segments)
            alarm_times = sorted(rng.sample([r.t_ms for r in stream],
                                            k=rng.randint(0, 10)))
            alarms = [alarm_at(t) for t in alarm_times]
            got = evaluate_run(alarms, stream, self.CFG)

            episodes = []
            for label, group in itertools.groupby(stream, key=lambda r: r.label):
                frames = list(group)
                if label == "sleepy" and len(frames) >= self.CFG.alarm_frame_threshold:
                    episodes.append((frames[0].t_ms, frames[-1].t_ms))
            hits = sum(1 for lo, hi in episodes
                       if any(lo <= t <= hi for t in alarm_times))
            awake = {r.t_ms for r in stream if r.label == "awake"}
            fps = sum(1 for t in alarm_times if t in awake)
            assert got.episodes == len(episodes)
            assert got.true_alarm_rate == (hits / len(episodes) if episodes else 0.0)
            assert got.false_positive_rate == (fps / len(alarm_times) if alarm_times else 0.0)
