# Engines package
from engines.base_engine import BaseEngine, EngineResult, EvolutionRequest
