"""
Руководство разработчика Облака.
"""
