import pytest

from genreforge.synthetic import build_demo_suite


@pytest.fixture(scope="session")
def demo_suite(tmp_path_factory):
    """A small generated corpus suite (2 languages, 2 tasks) shared read-only."""
    root = tmp_path_factory.mktemp("demo_suite")
    config_path = build_demo_suite(root)
    return root, config_path
