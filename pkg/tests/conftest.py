def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS, key=lambda k: (int(k.split("@")[0]), k)):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
