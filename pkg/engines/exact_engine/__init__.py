# Exact Engine package
from engines.exact_engine.exact_engine import ExactEngine
