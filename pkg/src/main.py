import logging
import os
import sys

# DON'T CHANGE THIS !!!
sys.path.insert(0, os.path.dirname(os.path.dirname(__file__)))

from flask import Flask, jsonify
from flask_cors import CORS
from werkzeug.exceptions import HTTPException

from src.config import load_app_settings
from src.errors import ToolkitError
from src.models.run import db
from src.routes.pipeline import pipeline_bp
from src.routes.runs import runs_bp

logger = logging.getLogger(__name__)


def create_app(config_overrides=None):
    app = Flask(__name__)

    # Configuration
    app.config.update(load_app_settings())
    if config_overrides:
        app.config.update(config_overrides)

    logging.basicConfig(level=app.config['LOG_LEVEL'],
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    # Initialize extensions
    CORS(app, origins=app.config['CORS_ORIGINS'], allow_headers=['Content-Type'])
    db.init_app(app)

    # Register blueprints
    app.register_blueprint(pipeline_bp, url_prefix='/api')
    app.register_blueprint(runs_bp, url_prefix='/api')

    @app.errorhandler(ToolkitError)
    def toolkit_error(error):
        return jsonify(error.to_dict()), error.http_status

    @app.errorhandler(HTTPException)
    def http_error(error):
        return jsonify({'code': error.name.lower().replace(' ', '_'), 'message': error.description}), error.code

    # Create database tables
    with app.app_context():
        database_url = app.config['SQLALCHEMY_DATABASE_URI']
        if database_url.startswith('sqlite:///'):
            db_dir = os.path.dirname(database_url.replace('sqlite:///', ''))
            if db_dir and not os.path.exists(db_dir):
                os.makedirs(db_dir)
        db.create_all()

    # Health check endpoint
    @app.route('/api/health')
    def health_check():
        return jsonify({'status': 'healthy', 'message': 'Box annotation toolkit API is running'})

    logger.info('app created with database %s', app.config['SQLALCHEMY_DATABASE_URI'])
    return app


if __name__ == '__main__':
    app = create_app()
    app.run(host='0.0.0.0', port=app.config['PORT'], debug=False)
