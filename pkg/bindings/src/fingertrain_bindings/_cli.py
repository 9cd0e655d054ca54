"""Locating and invoking the core command-line tool.

The bindings never import the core package: every call goes through the
CLI and its documented file formats, so binding results are the CLI's
results by construction. ``FINGERTRAIN_CLI`` overrides the executable
(either a program name on PATH or an absolute path).
"""

from __future__ import annotations

import os
import shutil
import subprocess


class BindingsError(RuntimeError):
    """Raised when the core tool fails; carries the core error text."""

    def __init__(self, message: str, exit_code: int | None = None):
        self.exit_code = exit_code
        super().__init__(message)


def cli_command() -> list[str]:
    override = os.environ.get("FINGERTRAIN_CLI")
    if override:
        return override.split()
    if shutil.which("fingertrain"):
        return ["fingertrain"]
    raise BindingsError(
        "fingertrain CLI not found; install the core package or set FINGERTRAIN_CLI"
    )


def run(args: list[str]) -> str:
    """Run one CLI invocation, returning stdout; failures raise typed errors."""
    proc = subprocess.run(
        cli_command() + args,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        detail = proc.stderr.strip() or proc.stdout.strip() or "unknown error"
        raise BindingsError(detail, exit_code=proc.returncode)
    return proc.stdout
