from pathlib import Path

import pytest

from wsd_fixtures import SeparableFixture, build_separable_fixture


@pytest.fixture
def separable(tmp_path: Path) -> SeparableFixture:
    return build_separable_fixture(tmp_path)
