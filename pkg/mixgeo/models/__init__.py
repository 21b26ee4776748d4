"""
Value types: simplex points, jets, links, loss handles and reports.
"""
