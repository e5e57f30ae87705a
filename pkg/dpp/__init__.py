"""
DPP: соответствия управлений, конечные деревья, мартингальные соответствия
"""
__version__ = "1.0.0"
