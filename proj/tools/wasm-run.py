#!/usr/bin/env python3
"""Run a WASI command module with wasmtime-py.

Usage: wasm-run.py [--env KEY=VALUE ...] MODULE [ARGS...]

The guest's exit status becomes ours. A trap prints "wasm trap: <reason>"
on stderr and exits with 134.
"""
import argparse
import os
import sys

import wasmtime


def main(argv):
    parser = argparse.ArgumentParser(add_help=True)
    parser.add_argument("--env", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("module")
    parser.add_argument("args", nargs=argparse.REMAINDER)
    opts = parser.parse_args(argv)

    env = []
    for item in opts.env:
        key, sep, value = item.partition("=")
        if not sep:
            parser.error("--env expects KEY=VALUE, got %r" % item)
        env.append((key, value))

    engine = wasmtime.Engine()
    try:
        module = wasmtime.Module.from_file(engine, opts.module)
    except (OSError, wasmtime.WasmtimeError) as err:
        print("wasm-run: cannot load %s: %s" % (opts.module, err), file=sys.stderr)
        return 2

    linker = wasmtime.Linker(engine)
    linker.define_wasi()
    store = wasmtime.Store(engine)
    wasi = wasmtime.WasiConfig()
    wasi.argv = [os.path.basename(opts.module)] + opts.args
    wasi.env = env
    wasi.inherit_stdin()
    wasi.inherit_stdout()
    wasi.inherit_stderr()
    store.set_wasi(wasi)

    try:
        instance = linker.instantiate(store, module)
        instance.exports(store)["_start"](store)
    except wasmtime.ExitTrap as exit_trap:
        return exit_trap.code
    except (wasmtime.Trap, wasmtime.WasmtimeError) as err:
        print("wasm trap: %s" % trap_reason(err), file=sys.stderr)
        return 134
    return 0


def trap_reason(err):
    lines = [line.strip() for line in str(err).splitlines() if line.strip()]
    reason = lines[-1] if lines else "unknown"
    prefix = "wasm trap:"
    if reason.startswith(prefix):
        reason = reason[len(prefix):].strip()
    return reason


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
