"""
Диффузии: контролируемые SDE, генератор, конечно-разностный оракул HJB
"""
__version__ = "1.0.0"
