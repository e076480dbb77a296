# Master Engine package
from engines.master_engine.master_engine import MasterEngine
