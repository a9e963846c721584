"""Simple runner to start the CLI when executed as a script.

Run with:
    python run.py all --out-dir out/

This imports the `crowdsense` package and calls its `main()` function, so
package-relative imports inside `crowdsense` work correctly.
"""

import sys

from crowdsense.main import main


if __name__ == "__main__":
    sys.exit(main())
