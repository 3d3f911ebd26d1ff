import logging

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.api.v1.endpoints import experiments, scenarios
from app.core.config import settings

logging.basicConfig(level=settings.LOG_LEVEL.upper())

app = FastAPI(title=settings.PROJECT_NAME)

origins = [
    "http://localhost:8000",
    "http://localhost:3000",
]

# Enable CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(scenarios.router, prefix=f"{settings.API_V1_STR}/scenarios", tags=["scenarios"])
app.include_router(experiments.router, prefix=f"{settings.API_V1_STR}/experiments", tags=["experiments"])

@app.get("/")
def read_root():
    return {"message": "Multi-IRS ISAC optimizer running"}
