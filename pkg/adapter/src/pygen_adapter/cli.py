from __future__ import annotations

import argparse
import sys

from .config import AdapterConfig, AdapterError
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pygen-adapter",
        description="Serve one fit_sample request from stdin against a wrapped generator.",
    )
    parser.add_argument("--config", required=True, help="adapter configuration JSON")
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig.from_file(args.config)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return serve(config)


if __name__ == "__main__":
    sys.exit(main())
