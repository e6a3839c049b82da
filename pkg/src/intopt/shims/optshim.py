"""``opt``-compatible CLI backed by llvmlite.

Supported invocations (the subset the pipeline issues):

    intopt-opt -passes=verify -disable-output file.ll
    intopt-opt -O3 -S file.ll [-o out.ll]
    intopt-opt -p=print<domtree> -disable-output file.ll
    intopt-opt -p=print<loops> -disable-output file.ll
    intopt-opt --print-passes

Analysis text goes to stderr, matching opt's behavior.
"""

from __future__ import annotations

import sys
from pathlib import Path

from . import cfganalysis

SUPPORTED_PRINT_PASSES = ("print<domtree>", "print<loops>")


def _llvm():
    try:
        import llvmlite.binding as llb
    except ImportError:
        print("intopt-opt: llvmlite is not installed", file=sys.stderr)
        raise SystemExit(2)
    llb.initialize_native_target()
    llb.initialize_native_asmprinter()
    llb.initialize_native_asmparser()
    return llb


def _parse_args(argv: list[str]) -> dict:
    opts = {
        "passes": None,
        "o3": False,
        "emit_text": False,
        "disable_output": False,
        "output": None,
        "input": None,
        "print_passes": False,
    }
    i = 0
    while i < len(argv):
        arg = argv[i]
        if arg.startswith("-passes="):
            opts["passes"] = arg.split("=", 1)[1]
        elif arg.startswith("-p="):
            opts["passes"] = arg.split("=", 1)[1]
        elif arg == "-O3":
            opts["o3"] = True
        elif arg == "-S":
            opts["emit_text"] = True
        elif arg == "-disable-output":
            opts["disable_output"] = True
        elif arg == "--print-passes":
            opts["print_passes"] = True
        elif arg == "-o":
            i += 1
            opts["output"] = argv[i]
        elif arg.startswith("-"):
            print(f"intopt-opt: unsupported flag {arg}", file=sys.stderr)
            raise SystemExit(2)
        else:
            opts["input"] = arg
        i += 1
    return opts


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    opts = _parse_args(argv)

    if opts["print_passes"]:
        for name in SUPPORTED_PRINT_PASSES:
            print(name)
        print("verify")
        return 0

    if not opts["input"]:
        print("intopt-opt: no input file", file=sys.stderr)
        return 2
    try:
        text = Path(opts["input"]).read_text()
    except OSError as exc:
        print(f"intopt-opt: {exc}", file=sys.stderr)
        return 2

    passes = opts["passes"]
    if passes and passes.startswith("print<"):
        if passes not in SUPPORTED_PRINT_PASSES:
            print(f"intopt-opt: unsupported analysis printer '{passes}'", file=sys.stderr)
            return 2
        # Verify first so garbage input is rejected as opt would.
        llb = _llvm()
        try:
            llb.parse_assembly(text)
        except RuntimeError as exc:
            print(f"intopt-opt: {exc}", file=sys.stderr)
            return 1
        for cfg in cfganalysis.parse_cfgs(text):
            if passes == "print<domtree>":
                sys.stderr.write(cfganalysis.print_domtree(cfg))
            else:
                sys.stderr.write(cfganalysis.print_loops(cfg))
        return 0

    llb = _llvm()
    try:
        mod = llb.parse_assembly(text)
        mod.verify()
    except RuntimeError as exc:
        print(f"intopt-opt: {exc}", file=sys.stderr)
        return 1

    if opts["o3"] or passes in ("default<O3>",):
        target = llb.Target.from_default_triple()
        tm = target.create_target_machine(reloc="pic", opt=3)
        pto = llb.create_pipeline_tuning_options(speed_level=3)
        pb = llb.create_pass_builder(tm, pto)
        mpm = pb.getModulePassManager()
        mpm.run(mod, pb)

    if opts["disable_output"]:
        return 0
    out_text = str(mod)
    if opts["output"] and opts["output"] != "-":
        Path(opts["output"]).write_text(out_text)
    else:
        sys.stdout.write(out_text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
