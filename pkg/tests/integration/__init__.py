"""
Сквозные тесты командной строки.
"""
