import sys
from pathlib import Path

# make sibling helper modules (gradcheck) importable from any rootdir
sys.path.insert(0, str(Path(__file__).parent))
