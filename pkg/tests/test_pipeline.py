"""Pipeline engine tests: replay determinism, live joiner, alarm hook."""

import logging
import time


from drowsewatch.classifier import ClassifierConfig
from drowsewatch.config import PipelineConfig
from drowsewatch.fusion import FusionConfig
from drowsewatch.ingest import FrameRecord, ScenarioSpec, Segment, synth_sequence
from drowsewatch.pipeline import (
    AlarmHook,
    run_live,
    run_replay,
    replay_session_id,
    wall_time_from_epoch,
)
from drowsewatch.store import EventStore


def scenario(*segments) -> list:
    return synth_sequence(ScenarioSpec(fps=30, segments=segments), seed=7)


class TestWallTime:
    def test_epoch_formatting(self):
        assert wall_time_from_epoch(0) == "1970-01-01T00:00:00.000Z"
        assert wall_time_from_epoch(61_234) == "1970-01-01T00:01:01.234Z"

    def test_deterministic(self):
        assert wall_time_from_epoch(5123) == wall_time_from_epoch(5123)


class TestRunReplay:
    def test_sixty_closed_frames_one_alarm(self, tmp_path):
        records = scenario(Segment(60, "eyes_closed", probability=0.9))
        cfg = PipelineConfig()
        with EventStore(tmp_path / "e.jsonl") as store:
            report = run_replay(records, cfg, store, "s1")
            assert report.alarms == 1
            assert report.yawns == 0
            assert report.frames == 60
            assert store.summary().alarm_count == 1

    def test_alert_stream_no_events(self, tmp_path):
        records = scenario(Segment(120, "alert", probability=0.1))
        cfg = PipelineConfig()
        with EventStore(tmp_path / "e.jsonl") as store:
            report = run_replay(records, cfg, store, "s1")
        assert report.alarms == 0
        assert report.yawns == 0
        assert report.invalid_ratio_frames == 0

    def test_yawn_stream(self, tmp_path):
        records = scenario(Segment(20, "yawning", probability=0.1),
                           Segment(20, "alert", probability=0.1))
        cfg = PipelineConfig()
        with EventStore(tmp_path / "e.jsonl") as store:
            report = run_replay(records, cfg, store, "s1")
        assert report.yawns == 1
        assert report.alarms == 0

    def test_no_face_fallback_fires_alarm(self, tmp_path):
        records = scenario(Segment(60, "no_face", probability=0.9))
        cfg = PipelineConfig()
        with EventStore(tmp_path / "e.jsonl") as store:
            report = run_replay(records, cfg, store, "s1")
        assert report.alarms == 1
        assert report.invalid_ratio_frames == 60

    def test_event_wall_times_derived_from_stream(self, tmp_path):
        records = scenario(Segment(60, "eyes_closed", probability=0.9))
        cfg = PipelineConfig()
        with EventStore(tmp_path / "e.jsonl") as store:
            run_replay(records, cfg, store, "s1")
            event = store.events()[0]
        assert event.wall_time == wall_time_from_epoch(event.t_ms)

    def test_constant_backend(self, tmp_path):
        records = scenario(Segment(60, "eyes_closed"))  # no scripted probability
        cfg = PipelineConfig(classifier=ClassifierConfig(backend="constant",
                                                         constant_value=1.0))
        with EventStore(tmp_path / "e.jsonl") as store:
            report = run_replay(records, cfg, store, "s1")
        assert report.alarms == 1

    def test_session_id_stable(self):
        a = replay_session_id(b"stream", b"config")
        b = replay_session_id(b"stream", b"config")
        c = replay_session_id(b"stream2", b"config")
        assert a == b != c
        assert a.startswith("replay-")


class SlowClassify:
    """Wraps scripted probabilities with a delay to force substitutions."""

    def __init__(self, delay: float):
        self.delay = delay

    def __call__(self, record: FrameRecord):
        time.sleep(self.delay)
        return record.probability


class TestRunLive:
    def test_fast_classifier_equals_replay(self, tmp_path):
        records = scenario(Segment(80, "eyes_closed", probability=0.9),
                           Segment(30, "alert", probability=0.1))
        cfg = PipelineConfig()
        with EventStore(tmp_path / "a.jsonl") as store:
            replay_report = run_replay(records, cfg, store, "s")
        with EventStore(tmp_path / "b.jsonl") as store:
            live_report = run_live(iter(records), cfg, store, "s")
        assert live_report.frames == replay_report.frames
        assert live_report.alarms == replay_report.alarms
        assert live_report.stale_probability_frames == 0

    def test_slow_classifier_substitutes_within_staleness(self, tmp_path, caplog):
        records = scenario(Segment(30, "eyes_closed", probability=0.9))

        def paced(frame_interval=0.01):
            for r in records:
                time.sleep(frame_interval)  # camera-rate arrival
                yield r

        cfg = PipelineConfig(staleness_frames=4)
        with caplog.at_level(logging.INFO):
            with EventStore(tmp_path / "e.jsonl") as store:
                report = run_live(paced(), cfg, store, "s",
                                  classify_fn=SlowClassify(0.03), join_timeout=0.001)
        assert report.frames == 30
        assert report.stale_probability_frames > 0
        assert any("substituted classifier result" in r.message for r in caplog.records)

    def test_slow_classifier_beyond_staleness_drops_signal(self, tmp_path):
        # landmark-free stream: with the classifier too slow and staleness 0,
        # frames between completions carry no signal at all
        records = [FrameRecord(t_ms=i * 33, probability=0.9) for i in range(20)]
        cfg = PipelineConfig(staleness_frames=0,
                             fusion=FusionConfig(alarm_frame_threshold=20))
        with EventStore(tmp_path / "e.jsonl") as store:
            report = run_live(iter(records), cfg, store, "s",
                              classify_fn=SlowClassify(0.05), join_timeout=0.001)
        assert report.frames == 20
        assert report.alarms == 0  # sleepy run keeps breaking

    def test_bounded_queue_backpressure(self, tmp_path):
        # queue far smaller than the stream still delivers every frame in order
        records = scenario(Segment(300, "alert", probability=0.2))
        cfg = PipelineConfig(buffer_size=4)
        with EventStore(tmp_path / "e.jsonl") as store:
            report = run_live(iter(records), cfg, store, "s")
        assert report.frames == 300


class FailingStore:
    """Stub store whose appends always fail, to exercise loss handling."""

    def append_event(self, event):
        from drowsewatch.store import StoreError
        raise StoreError("disk on fire")


class TestStoreFailureHandling:
    def test_write_failure_logged_and_loop_continues(self, caplog):
        records = scenario(Segment(120, "eyes_closed", probability=0.9))
        cfg = PipelineConfig()
        with caplog.at_level(logging.ERROR):
            report = run_replay(records, cfg, FailingStore(), "s1")
        assert report.frames == 120  # the run finished
        assert report.alarms == 2  # emissions still counted
        assert report.dropped_events == 2
        assert any("event lost" in r.message for r in caplog.records)


class TestAlarmHook:
    def test_default_hook_prints_to_stderr(self, capsys):
        hook = AlarmHook(None)
        hook.fire("alarm", 1234, "sess")
        hook.close()
        assert "t_ms=1234" in capsys.readouterr().err

    def test_command_template_invoked(self, tmp_path):
        marker = tmp_path / "fired.txt"
        hook = AlarmHook(f"touch {marker}")
        hook.fire("alarm", 1, "sess")
        hook.close()
        assert marker.exists()

    def test_failing_command_does_not_raise(self, caplog):
        hook = AlarmHook("/no/such/binary {t_ms}")
        with caplog.at_level(logging.WARNING):
            hook.fire("alarm", 1, "s")
            hook.close()
        assert any("alarm hook" in r.message for r in caplog.records)

    def test_hook_fires_during_replay(self, tmp_path, capsys):
        records = scenario(Segment(60, "eyes_closed", probability=0.9))
        cfg = PipelineConfig()
        hook = AlarmHook(None)
        with EventStore(tmp_path / "e.jsonl") as store:
            run_replay(records, cfg, store, "s1", hook=hook)
        hook.close()
        assert "ALARM" in capsys.readouterr().err
