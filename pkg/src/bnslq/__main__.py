from bnslq.cli import entry

entry()
