"""python -m cli <command> [options]"""
import os
import sys

import django


def main():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "core.settings")
    django.setup()
    from cli.services import run

    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
