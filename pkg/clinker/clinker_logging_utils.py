import logging
import os

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(log_name, log_dir="logs", quiet=False):
    """
    Configures root logging for an entry point: one log file per job plus the console.

    :param log_name: Base name of the log file, e.g. 'clinker_mow'.
    :param log_dir: Directory receiving '<log_name>.log'. Created if missing.
    :param quiet: When set, the console only shows warnings and errors.
    """
    os.makedirs(log_dir, exist_ok=True)
    log_file_path = os.path.abspath(os.path.join(log_dir, f"{log_name}.log"))

    stream_handler = logging.StreamHandler()
    stream_handler.setLevel(logging.WARNING if quiet else logging.INFO)
    logging.basicConfig(
        level=logging.INFO,
        format=LOG_FORMAT,
        handlers=[
            logging.FileHandler(log_file_path),
            stream_handler
        ],
        force=True
    )
    return log_file_path
