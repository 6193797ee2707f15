import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentic_thermal.bus import (MEASURED_LATENCIES_S, AgentBus, LatencyModel, MessageQueue,
                                 QueueClosed)


def test_fixed_zero_is_visible_immediately():
    q = MessageQueue("r", LatencyModel.fixed(0.0))
    q.enqueue("a", 10.0)
    assert q.poll(10.0) == "a"
    assert q.poll(10.0) is None


def test_poll_before_visible_returns_none():
    q = MessageQueue("r", LatencyModel.fixed(5.0))
    env = q.enqueue("a", 1.0)
    assert env.visible_at == 6.0
    assert q.poll(5.999) is None
    assert q.poll(6.0) == "a"


def test_fifo_among_visible():
    q = MessageQueue("r", LatencyModel.fixed(1.0))
    for i in range(5):
        q.enqueue(i, float(i))
    assert q.drain(100.0) == [0, 1, 2, 3, 4]


def test_later_message_can_overtake_a_slower_one():
    q = MessageQueue("r", LatencyModel.fixed(50.0))
    q.enqueue("slow", 0.0)
    q.latency = LatencyModel.fixed(1.0)
    q.enqueue("fast", 1.0)
    assert q.drain(10.0) == ["fast"]
    assert q.drain(50.0) == ["slow"]


def test_empirical_draws_from_measurements():
    model = LatencyModel.empirical()
    rng = np.random.default_rng(0)
    draws = {model.draw(rng) for _ in range(2000)}
    assert draws == set(MEASURED_LATENCIES_S)
    assert len(MEASURED_LATENCIES_S) == 13


def test_latency_validation():
    with pytest.raises(ValueError):
        LatencyModel.fixed(-1.0)
    with pytest.raises(ValueError):
        LatencyModel.uniform(2.0, 1.0)
    with pytest.raises(ValueError):
        LatencyModel.empirical([])


def test_closed_queue_rejects_enqueue():
    bus = AgentBus(LatencyModel.fixed(0.0))
    bus.summaries.enqueue("x", 0.0)
    bus.close()
    with pytest.raises(QueueClosed):
        bus.recommendations.enqueue("y", 1.0)
    assert bus.summaries.poll(0.0) == "x"


def test_events_are_logged_on_poll():
    bus = AgentBus(LatencyModel.fixed(2.0))
    bus.recommendations.enqueue("r", 1.0)
    bus.recommendations.poll(5.0)
    assert bus.events == [["recommendation", "1.0", "3.0", "5.0", "str", ""]]


def test_seeded_latency_reproducible():
    def delays(seed):
        q = MessageQueue("r", LatencyModel.empirical(), np.random.default_rng(seed))
        return [q.enqueue(i, 0.0).visible_at for i in range(50)]

    assert delays(3) == delays(3)
    assert delays(3) != delays(4)


def test_ten_thousand_messages_delivered_exactly_once():
    rng = np.random.default_rng(1)
    q = MessageQueue("r", LatencyModel.uniform(0.0, 30.0), np.random.default_rng(2))
    pending = []  # reference: (visible_at, seq, payload)
    got, expected = [], []
    now = 0.0
    for i in range(10_000):
        now += float(rng.exponential(2.0))
        env = q.enqueue(i, now)
        pending.append((env.visible_at, env.seq, i))
        if rng.random() < 0.6:
            poll_at = now + float(rng.uniform(0.0, 5.0))
            item = q.poll(poll_at)
            visible = [p for p in pending if p[0] <= poll_at]
            if visible:
                first = min(visible, key=lambda p: p[1])
                pending.remove(first)
                expected.append(first[2])
            assert (item is None) == (not visible)
            if item is not None:
                got.append(item)
    rest = q.drain(float("inf"))
    got.extend(rest)
    expected.extend(p[2] for p in sorted(pending, key=lambda p: p[1]))
    assert got == expected
    assert sorted(got) == list(range(10_000))
    assert len(q) == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 100.0), st.floats(0.0, 20.0)), max_size=40))
def test_nothing_visible_before_its_time(items):
    q = MessageQueue("r", LatencyModel.fixed(0.0))
    for k, (t, d) in enumerate(sorted(items)):
        q.latency = LatencyModel.fixed(d)
        q.enqueue(k, t)
    seen = set()
    for now in np.linspace(0.0, 130.0, 27):
        while (env := q.poll_envelope(float(now))) is not None:
            assert env.visible_at <= now
            assert env.payload not in seen
            seen.add(env.payload)
    assert len(seen) == len(items)
