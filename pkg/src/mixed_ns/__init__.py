"""
二维不可压 Navier-Stokes 混合边界条件有限元求解器
"""
__version__ = '1.0.0'
