"""Run every built-in scene with its default command and summarize the outcomes.

    python3 scripts/run_builtin_scenes.py [--out reports/] [--threads N]
"""

import argparse
from pathlib import Path

from contactlab import parallel
from contactlab.cli import Settings, dumps_report, run_scene
from contactlab.scene import BUILTIN_SCENES, load_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("reports"))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    parallel.set_threads(args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    print(f"{'scene':<16} {'command':<18} {'status':<14} {'seconds':>8}")
    for name in BUILTIN_SCENES:
        cmd = load_scene(name).data["default_command"]
        rep, code = run_scene(name, cmd, Settings())
        (args.out / f"{name}.json").write_text(dumps_report(rep))
        print(f"{name:<16} {cmd:<18} {rep['status']:<14} {rep['wall_clock']:>8.2f}")


if __name__ == "__main__":
    main()
