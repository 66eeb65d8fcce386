from unittest.mock import MagicMock, call

import pytest

from vanetsim.errors import SchedulingError
from vanetsim.events import EventKind


def test_events_run_in_time_order(clock):
    seen = []
    for t in (3.0, 1.0, 2.0):
        clock.schedule(t, EventKind.APP_SEND, lambda t=t: seen.append(t))

    clock.run_until(10.0)

    assert seen == [1.0, 2.0, 3.0]


def test_ties_run_in_scheduling_order(clock):
    action = MagicMock()
    for name in ("first", "second", "third"):
        clock.schedule(1.0, EventKind.MAC_TIMER, lambda name=name: action(name))

    clock.run_until(2.0)

    assert action.call_args_list == [call("first"), call("second"), call("third")]


def test_scheduling_into_the_past_is_an_error(clock):
    clock.schedule(5.0, EventKind.APP_SEND, lambda: None)
    clock.run_until(6.0)

    with pytest.raises(SchedulingError):
        clock.schedule(4.0, EventKind.APP_SEND, lambda: None)


def test_cancelled_events_never_fire(clock):
    action = MagicMock()
    event = clock.schedule(1.0, EventKind.AODV_TIMER, action)
    event.cancel()

    clock.run_until(2.0)

    action.assert_not_called()
    assert len(clock) == 0


def test_run_until_stops_before_end(clock):
    action = MagicMock()
    clock.schedule(1.0, EventKind.APP_SEND, action)
    clock.schedule(2.0, EventKind.APP_SEND, action)

    clock.run_until(2.0)

    assert action.call_count == 1
    assert clock.now == 2.0
    assert len(clock) == 1


def test_events_scheduled_while_running_are_dispatched(clock):
    seen = []

    def chain():
        seen.append(clock.now)
        if clock.now < 0.3:
            clock.schedule_in(0.1, EventKind.MOBILITY_STEP, chain)

    clock.schedule(0.0, EventKind.MOBILITY_STEP, chain)
    clock.run_until(1.0)

    assert seen == pytest.approx([0.0, 0.1, 0.2, 0.3])


def test_dispatch_on_empty_queue(clock):
    with pytest.raises(SchedulingError):
        clock.dispatch_next()
