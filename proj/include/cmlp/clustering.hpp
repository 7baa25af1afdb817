#pragma once

#include "cmlp/clustering/bic.hpp"
#include "cmlp/clustering/dbscan.hpp"
#include "cmlp/clustering/kmeans.hpp"
#include "cmlp/clustering/meanshift.hpp"
#include "cmlp/clustering/result.hpp"
#include "cmlp/clustering/xmeans.hpp"
