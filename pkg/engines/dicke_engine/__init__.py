# Dicke Engine package
from engines.dicke_engine.dicke_engine import DickeEngine
