import pytest

import weakerr as we


@pytest.fixture(scope="session")
def problems():
    return {p.name: p for p in we.builtin_problems()}
