from .canon import canon_dumps, canon_line, canon_loads
from .config import RunConfig
from .report import HEADER, report_row, write_report
from .server import Session, serve_stdio, serve_tcp
from .trace import generate_trace, replay_trace, write_trace
