# Orchestrator package
from engines.orchestrator.orchestrator import ExperimentOrchestrator
