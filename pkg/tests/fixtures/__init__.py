"""
Общие фикстуры тестов.
"""
