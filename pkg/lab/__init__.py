"""Weyl 和实验室：指数和的求值、矩、计数预言机与验收套件"""

__version__ = "1.0.0"
