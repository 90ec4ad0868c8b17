"""Pytest wiring: do what `manage.py test` does before the Django test cases run."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'barycenter_project.settings')
django.setup()

import pytest  # noqa: E402
from django.test.utils import setup_test_environment, teardown_test_environment  # noqa: E402
from django.test.runner import DiscoverRunner  # noqa: E402

collect_ignore = ['examples']


@pytest.fixture(scope='session', autouse=True)
def _django_test_databases():
    setup_test_environment()
    runner = DiscoverRunner(verbosity=0, interactive=False)
    old_config = runner.setup_databases()
    yield
    runner.teardown_databases(old_config)
    teardown_test_environment()
