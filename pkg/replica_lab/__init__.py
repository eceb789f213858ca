# replica_lab package
