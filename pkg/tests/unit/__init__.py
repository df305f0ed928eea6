"""
Модульные тесты.
"""
