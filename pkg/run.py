#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
CurveWeaver 启动脚本
"""

import sys

from dotenv import load_dotenv

# 加载环境变量
load_dotenv()

if __name__ == "__main__":
    from app.main import main

    sys.exit(main())
