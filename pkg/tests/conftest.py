import sys
from pathlib import Path

# test-local helpers (fixtures.py, oracles.py) importable without packaging them
sys.path.insert(0, str(Path(__file__).parent))
