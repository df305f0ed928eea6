"""
Тесты времени работы и приемочные прогоны.
"""
