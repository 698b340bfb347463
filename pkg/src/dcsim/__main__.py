"""``python -m dcsim <tool>``: same entrypoints as the installed scripts."""

import sys

from .cli import (
    dcsbench_main,
    dcsmigrate_main,
    dcsnode_main,
    dcsprobe_main,
    dcstune_main,
)
from .failover import main as failover_main

TOOLS = {
    "node": dcsnode_main,
    "probe": dcsprobe_main,
    "bench": dcsbench_main,
    "tune": dcstune_main,
    "migrate": dcsmigrate_main,
    "failover": failover_main,
}


def main() -> int:
    if len(sys.argv) < 2 or sys.argv[1] not in TOOLS:
        print(f"usage: python -m dcsim {{{','.join(sorted(TOOLS))}}} ...",
              file=sys.stderr)
        return 2
    return TOOLS[sys.argv[1]](sys.argv[2:])


if __name__ == "__main__":
    sys.exit(main())
