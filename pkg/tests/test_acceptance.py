"""The fifteen numbered acceptance criteria, one test each.

Every test prints a single ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line (also repeated in the terminal summary).  Criteria 4 and 14 contain
checks whose expected values cannot be reproduced from the stated formulas;
they are implemented as stated and fail (see the decisions ledger).
"""

import pytest

from sepgeom import acceptance


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number, acceptance_log):
    result = acceptance.run_criterion(number, seed=0, workers=1)
    line = result.line()
    print(line)
    acceptance_log.append(line)
    assert result.passed, line
