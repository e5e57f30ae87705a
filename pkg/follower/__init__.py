"""
Монотонное преследование: левый интеграл, классическая модель, DP-оракул, дерево
"""
__version__ = "1.0.0"
