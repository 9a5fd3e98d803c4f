import json
from datetime import datetime

from flask_sqlalchemy import SQLAlchemy

db = SQLAlchemy()


class RunRecord(db.Model):
    __tablename__ = 'runs'

    id = db.Column(db.Integer, primary_key=True)
    command = db.Column(db.String(50), nullable=False)      # corrupt, correct, simulate, analyze, eval-ap
    config_json = db.Column(db.Text, nullable=False)        # effective configuration
    summary_json = db.Column(db.Text, nullable=False)       # report without bulky payloads
    created_at = db.Column(db.DateTime, default=datetime.utcnow)

    def __repr__(self):
        return f'<RunRecord {self.id} {self.command}>'

    def to_dict(self):
        return {
            'id': self.id,
            'command': self.command,
            'config': json.loads(self.config_json),
            'summary': json.loads(self.summary_json),
            'created_at': self.created_at.isoformat() if self.created_at else None
        }
