import os
import sys
from pathlib import Path

import pytest


os.environ.setdefault('ALIGNBENCH_NO_DOTENV', '1')

TOOLS_DIR = Path(__file__).resolve().parents[2] / 'tools' / 'alignment-bench'
if str(TOOLS_DIR) not in sys.path:
    sys.path.insert(0, str(TOOLS_DIR))


@pytest.fixture
def corpus_lines() -> list[dict]:
    """One evaluable topic: 2 accepted, 2 rejected collected resources."""
    base = {'topic_id': 'T1', 'topic_title': 'Loops', 'domain': 'Python Programming', 'origin': 'collected'}
    return [
        {**base, 'resource_id': 'a1', 'transcript': 'for loops iterate over lists', 'label': 'accepted', 'baseline_rank': 3},
        {**base, 'resource_id': 'a2', 'transcript': 'while loops repeat until done', 'label': 'accepted', 'baseline_rank': 1},
        {**base, 'resource_id': 'r1', 'transcript': 'baking bread with yeast', 'label': 'rejected', 'baseline_rank': 2},
        {**base, 'resource_id': 'r2', 'transcript': 'history of the roman empire', 'label': 'rejected', 'baseline_rank': 4},
    ]
