"""
Ядро: пространства путей, усечения, конкатенации и меры на путях
"""
__version__ = "1.0.0"
