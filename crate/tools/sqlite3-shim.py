#!/usr/bin/env python3
"""Minimal stand-in for the sqlite3 command-line shell.

Runs a script from stdin against Python's bundled SQLite library. Supports
the subset the validator uses: SQL statements, `.mode quote` and `-bail`.
"""
import sqlite3
import sys


def quote(v):
    if v is None:
        return "NULL"
    if isinstance(v, bytes):
        return "X'" + v.hex().upper() + "'"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def main(argv):
    bail = "-bail" in argv
    paths = [a for a in argv if not a.startswith("-")]
    conn = sqlite3.connect(paths[0] if paths else ":memory:", isolation_level=None)
    mode = "list"
    buf = ""
    status = 0
    for line in sys.stdin:
        if not buf and line.lstrip().startswith("."):
            parts = line.split()
            if parts[0] == ".mode" and len(parts) > 1:
                mode = parts[1]
            continue
        buf += line
        if not sqlite3.complete_statement(buf):
            continue
        stmt, buf = buf, ""
        try:
            cur = conn.execute(stmt)
            for row in cur.fetchall():
                if mode == "quote":
                    print(",".join(quote(v) for v in row))
                else:
                    print("|".join("" if v is None else str(v) for v in row))
        except sqlite3.Error as e:
            print(f"Error: {e}", file=sys.stderr)
            status = 1
            if bail:
                break
    sys.stdout.flush()
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
