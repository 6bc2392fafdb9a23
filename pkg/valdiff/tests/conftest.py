import sys
from pathlib import Path

# Support running tests from repo root or valdiff/ dir
test_dir = Path(__file__).resolve().parent
source_dir = test_dir.parent

if str(source_dir) not in sys.path:
    sys.path.insert(0, str(source_dir))
