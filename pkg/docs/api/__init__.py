"""
Справочник форматов файлов Облака.
"""
