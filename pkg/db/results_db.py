# db/results_db.py
import sqlite3
import json
import os
import logging
import uuid
from datetime import datetime
from typing import Dict, Any, List, Optional

DEFAULT_DB_PATH = "./data/results/runs.db"


class ResultsDB:
    """
    SQLite ledger of command invocations: what was run, with which
    configuration, how it ended and its summary.
    """

    def __init__(self, db_path: Optional[str] = None):
        self.logger = logging.getLogger(__name__)
        self.db_path = db_path or os.environ.get("PETRIBNN_DB_PATH", DEFAULT_DB_PATH)

        directory = os.path.dirname(self.db_path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        self._initialize_db()

    def _initialize_db(self):
        """Create the runs table if it doesn't exist."""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            cursor.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                command TEXT NOT NULL,
                config_json TEXT NOT NULL,
                exit_code INTEGER NOT NULL,
                summary_json TEXT NOT NULL,
                timestamp TEXT NOT NULL
            )
            ''')
            conn.commit()
            conn.close()
        except sqlite3.Error as e:
            self.logger.error(f"Database initialization error: {str(e)}")

    def store_run(self, command: str, config: Dict[str, Any], exit_code: int,
                  summary: Dict[str, Any]) -> Optional[str]:
        """Record one invocation; returns its run id, or None when the write failed."""
        run_id = uuid.uuid4().hex[:12]
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            cursor.execute(
                '''
                INSERT INTO runs
                (run_id, command, config_json, exit_code, summary_json, timestamp)
                VALUES (?, ?, ?, ?, ?, ?)
                ''',
                (
                    run_id,
                    command,
                    json.dumps(config, default=str),
                    exit_code,
                    json.dumps(summary, default=str),
                    datetime.now().isoformat(),
                )
            )
            conn.commit()
            conn.close()
            self.logger.info(f"Stored {command} run {run_id} (exit {exit_code})")
            return run_id
        except sqlite3.Error as e:
            self.logger.error(f"Error storing run: {str(e)}")
            return None

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            cursor.execute(
                "SELECT run_id, command, config_json, exit_code, summary_json, timestamp FROM runs WHERE run_id = ?",
                (run_id,)
            )
            row = cursor.fetchone()
            conn.close()
            return self._to_dict(row) if row else None
        except sqlite3.Error as e:
            self.logger.error(f"Error retrieving run: {str(e)}")
            return None

    def list_runs(self, command: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        """Most recent runs first, optionally for one command only."""
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            query = "SELECT run_id, command, config_json, exit_code, summary_json, timestamp FROM runs"
            params: list = []
            if command:
                query += " WHERE command = ?"
                params.append(command)
            query += " ORDER BY timestamp DESC LIMIT ?"
            params.append(limit)
            cursor.execute(query, params)
            rows = cursor.fetchall()
            conn.close()
            return [self._to_dict(row) for row in rows]
        except sqlite3.Error as e:
            self.logger.error(f"Error listing runs: {str(e)}")
            return []

    @staticmethod
    def _to_dict(row) -> Dict[str, Any]:
        run_id, command, config_json, exit_code, summary_json, timestamp = row
        return {
            "run_id": run_id,
            "command": command,
            "config": json.loads(config_json),
            "exit_code": exit_code,
            "summary": json.loads(summary_json),
            "timestamp": timestamp,
        }
