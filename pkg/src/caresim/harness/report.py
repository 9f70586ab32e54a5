"""Evaluation reports: a delimited table, one row per (task, robot) pair."""

from __future__ import annotations

from pathlib import Path

HEADER = "task\trobot\thuman\tepisodes\tmean_reward\tstd_reward\tsuccess_rate"


def report_row(task: str, robot: str, human: str, report) -> str:
    return (f"{task}\t{robot}\t{human}\t{report.episodes}\t"
            f"{report.mean_reward!r}\t{report.std_reward!r}\t"
            f"{report.success_rate!r}")


def write_report(rows: list[str], path) -> str:
    text = HEADER + "\n" + "\n".join(rows) + "\n"
    Path(path).write_text(text)
    return text
