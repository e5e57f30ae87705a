"""
Запуск проверок и экспериментов: подкоманды, конфигурация, отчёты
"""
__version__ = "1.0.0"
