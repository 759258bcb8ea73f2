import json
import logging

import numpy as np
import structlog

from mubkit.logging_config import configure_logging


def test_json_events_carry_command_and_plain_numbers(capsys):
    configure_logging(command="gen")
    logging.getLogger().setLevel(logging.INFO)
    structlog.get_logger("mubkit.test").info("Built", d=np.int64(4), probs=np.array([0.5, 0.5]))
    line = capsys.readouterr().err.strip().splitlines()[-1]
    event = json.loads(line)
    assert event["event"] == "Built"
    assert event["command"] == "gen"
    assert event["d"] == 4
    assert event["probs"] == [0.5, 0.5]


def test_console_renderer_in_debug(monkeypatch, capsys):
    monkeypatch.setenv("MUBKIT_DEBUG", "true")
    configure_logging()
    structlog.get_logger("mubkit.test").debug("Debugging", d=2)
    err = capsys.readouterr().err
    assert "Debugging" in err
    assert "command" not in err
