"""Alpha-stable BSS - 基于特征函数草图的逐频聚类盲源分离"""

__version__ = "0.1.0"
