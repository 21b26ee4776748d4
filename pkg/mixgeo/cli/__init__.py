"""
Command-line front end. Each module holds one command family.
"""
