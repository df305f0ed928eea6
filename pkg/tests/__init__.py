"""
Тесты Облака.
"""
