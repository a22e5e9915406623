"""Zero-bias Stein toolkit entry point.

Equivalent to the ``zbstein`` console script: ``python main.py verify``.
"""

from zbstein.cli import main


if __name__ == "__main__":
    main(prog_name="zbstein")
