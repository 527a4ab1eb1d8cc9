#!/usr/bin/env python3
# Main application entry point

import sys

from cli.commands import run


def main(argv=None):
    """Main application entry point"""
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
