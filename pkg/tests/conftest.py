def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running checks")
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance criteria with stated tolerances"
    )
