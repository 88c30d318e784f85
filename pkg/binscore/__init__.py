"""
binscore project package: settings and the command-line tool.
"""
