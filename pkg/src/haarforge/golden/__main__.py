import sys

from . import regenerate

out = sys.argv[1] if len(sys.argv) > 1 else "src/haarforge/golden"
for path in regenerate(out):
    print("wrote", path)
