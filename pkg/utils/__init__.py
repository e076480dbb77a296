# Utils package
from utils.output_writer import OutputWriter
from utils.logging_setup import configure_logging
