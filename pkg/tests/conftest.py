import sys
from pathlib import Path

# Make sibling test helpers (oracle.py) importable regardless of rootdir.
sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
