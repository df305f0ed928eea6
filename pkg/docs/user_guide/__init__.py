"""
Руководство пользователя Облака.
"""
