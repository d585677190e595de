"""Shared buffer for acceptance-check result lines.

The acceptance tests run under output capture; lines recorded here are
echoed by the terminal-summary hook in conftest.py so a full run always
shows one PASS/FAIL line per criterion.
"""

LINES: list[str] = []
