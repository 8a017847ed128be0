"""Scenarios, the shared simulator loop, Monte Carlo suites and the command line."""
