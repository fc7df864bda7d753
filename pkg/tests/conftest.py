import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines after the run, capture or not."""
    for name, mod in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance" and mod is not None:
            verdicts = getattr(mod, "VERDICTS", None)
            if verdicts:
                terminalreporter.section("acceptance criteria")
                for line in verdicts:
                    terminalreporter.write_line(line)
            break
