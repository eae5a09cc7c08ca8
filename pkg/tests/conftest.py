import time

SESSION_START = time.monotonic()


def pytest_collection_modifyitems(config, items):
    # acceptance checks summarize the whole suite, so run them after the
    # unit/property files (the sort is stable and keeps order otherwise)
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")
